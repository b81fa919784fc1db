Page({
  data: {
    paid: false,
  },

  startPay: function () {
    var openid = getApp().globalData.openid;
    wx.requestPayment({
      timeStamp: '1700000000',
      nonceStr: 'abc123',
      signType: 'MD5',
    });
    wx.navigateTo({
      url: '/pages/done/done?uid=' + openid,
    });
  },
})
